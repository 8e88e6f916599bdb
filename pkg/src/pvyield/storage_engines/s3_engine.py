"""AWS S3 storage for pipeline outputs. Objects are keyed `<out>/<name>` in the configured bucket."""

import os
import asyncio
from urllib.parse import quote as urlencode
from logging import getLogger
try:
    from functools import cache
except ImportError:
    from functools import lru_cache
    cache = lru_cache(maxsize=None)

import boto3
from botocore.exceptions import BotoCoreError, ClientError

from ..exceptions import MissingInputError, PvYieldError
from ..structs import OutputFile
from .storage_engine import StorageEngine

logger = getLogger(__name__)


class S3Engine(StorageEngine):
    """Amazon S3 storage engine.

    Properties:
        client (boto3.client): The S3 client.
    """

    @property
    @cache
    def client(self):
        """
        Get the S3 client. Make sure the AWS credentials are set in the environment variables.
        This property is cached.

        Returns:
            boto3.client: The S3 client.
        """
        key_id = os.environ.get('AWS_ACCESS_KEY_ID')
        access_key = os.environ.get('AWS_SECRET_ACCESS_KEY')
        region_name = os.environ.get('AWS_DEFAULT_REGION') or self.config.get('region') or None
        return boto3.client('s3', region_name=region_name, aws_access_key_id=key_id, aws_secret_access_key=access_key)

    @property
    def bucket(self) -> str:
        bucket = self.config.get('bucket') or os.environ.get('AWS_BUCKET_NAME')
        if not bucket:
            raise PvYieldError('no bucket configured for s3 storage')
        return bucket

    def key(self, name: str) -> str:
        prefix = str(self.config.get('out') or '').strip('/')
        return f'{prefix}/{name}' if prefix else name

    async def save(self, *, name: str, data: bytes) -> OutputFile:
        """Put data into the bucket.

        Args:
            name (str): Output name.
            data (bytes): Object body.

        Returns:
            OutputFile: The saved output with its url.
        """
        try:
            key, bucket = self.key(name), self.bucket
            res = await asyncio.to_thread(self.client.put_object, Body=data, Bucket=bucket, Key=key)
            if res.get('ResponseMetadata', {}).get('HTTPStatusCode', 0) == 200:
                status, msg = True, f'{name} successfully uploaded'
            else:
                status, msg = False, f'Error uploading {name}'
            region = self.config.get('region') or os.environ.get('AWS_DEFAULT_REGION')
            url = f"https://{bucket}.s3.{region}.amazonaws.com/{urlencode(key.encode('utf8'))}"
            return OutputFile(name=name, url=url, size=len(data), rows=self.count_rows(name, data), status=status,
                              message=msg, error='' if status else msg)
        except (BotoCoreError, ClientError) as err:
            logger.error(f'Error uploading output: {err} in {self.__class__.__name__}')
            raise PvYieldError(f'cannot upload {name}: {err}') from err

    async def load(self, name: str) -> bytes:
        try:
            res = await asyncio.to_thread(self.client.get_object, Bucket=self.bucket, Key=self.key(name))
            return await asyncio.to_thread(res['Body'].read)
        except ClientError as err:
            raise MissingInputError(f's3://{self.bucket}/{self.key(name)}') from err
